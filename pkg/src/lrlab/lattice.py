"""Finite metric graphs: chains, grids, file-loaded graphs, balls and volume checks."""
from dataclasses import dataclass
import json
import math

import numpy as np

from . import _kernels
from .errors import InvalidArgument, ResourceLimitError

DENSE_TABLE_LIMIT = 4096
DEFAULT_SITE_CAP = 4096
METRIC_RULES = ("l1", "l2", "linf")


def _coordinate_distances(coords, rows, rule):
    diff = np.abs(coords[rows, None, :] - coords[None, :, :])
    if rule == "l1":
        return diff.sum(axis=-1)
    if rule == "l2":
        return np.sqrt((diff ** 2).sum(axis=-1))
    return diff.max(axis=-1)


class MetricGraph:
    """A finite set of sites with a metric, a declared dimension D and a center x0.

    The metric is stored either as a dense distance table (up to
    ``DENSE_TABLE_LIMIT`` sites) or as coordinates with a named rule, in which
    case distance rows are computed on demand. Instances are read-only.
    """

    def __init__(self, sites, dimension, x0=None, *, table=None, coords=None,
                 rule=None, path_metric=False):
        sites = tuple(sites)
        if not sites:
            raise InvalidArgument("a metric graph needs at least one site")
        if dimension < 0 or int(dimension) != dimension:
            raise InvalidArgument("dimension D must be a nonnegative integer")
        self.sites = sites
        self.dimension = int(dimension)
        self._index = {s: i for i, s in enumerate(sites)}
        if len(self._index) != len(sites):
            raise InvalidArgument("duplicate site identifiers")
        self._coords = None
        self._rule = None
        if table is not None:
            table = np.array(table, dtype=np.float64)
            if table.shape != (len(sites), len(sites)):
                raise InvalidArgument("distance table shape does not match the site list")
        else:
            if coords is None or rule not in METRIC_RULES:
                raise InvalidArgument("need a distance table or coordinates with rule in "
                                      f"{METRIC_RULES}")
            coords = np.array(coords, dtype=np.float64).reshape(len(sites), -1)
            coords.setflags(write=False)
            self._coords, self._rule = coords, rule
            if len(sites) <= DENSE_TABLE_LIMIT:
                table = _coordinate_distances(coords, np.arange(len(sites)), rule)
        if table is not None:
            table.setflags(write=False)
        self._table = table
        self.path_metric = bool(path_metric)
        self.x0 = sites[len(sites) // 2] if x0 is None else x0
        self.index(self.x0)

    def __len__(self):
        return len(self.sites)

    def __repr__(self):
        return f"MetricGraph(n_sites={len(self)}, D={self.dimension}, x0={self.x0!r})"

    def index(self, x):
        try:
            return self._index[x]
        except (KeyError, TypeError):
            raise InvalidArgument(f"unknown site {x!r}") from None

    def site_indices(self, sites):
        return [self.index(s) for s in sites]

    def distances_from(self, x):
        """Distance row d(x, .) in site order."""
        i = self.index(x)
        if self._table is not None:
            return self._table[i]
        return _coordinate_distances(self._coords, np.array([i]), self._rule)[0]

    def dist(self, x, y):
        return float(self.distances_from(x)[self.index(y)])

    def distance_table(self):
        if self._table is None:
            raise ResourceLimitError(
                f"{len(self)} sites exceed the dense distance-table limit {DENSE_TABLE_LIMIT}")
        return self._table

    def set_distance(self, region_a, region_b):
        """d(X, Y) = min over pairs; +inf when either region is empty."""
        region_a, region_b = list(region_a), list(region_b)
        if not region_a or not region_b:
            return math.inf
        cols = self.site_indices(region_b)
        return float(min(self.distances_from(a)[cols].min() for a in region_a))

    def realized_distances(self, x=None):
        """Sorted distinct values taken by d(x, .) (all of d when x is None), always incl. 0."""
        if x is not None:
            vals = self.distances_from(x)
        else:
            vals = self.distance_table().ravel()
        return np.unique(np.concatenate([[0.0], vals]))

    def ball(self, x, r):
        if r < 0:
            raise InvalidArgument("ball radius must be nonnegative")
        row = self.distances_from(x)
        return frozenset(self.sites[i] for i in np.flatnonzero(row <= r))

    def diameter(self):
        if self._table is not None:
            return float(self._table.max())
        return float(max(self.distances_from(s).max() for s in (self.sites[0], self.sites[-1])))

    def sorted_order(self, region):
        """Sites of ``region`` in the graph's site order."""
        return tuple(sorted(region, key=self.index))

    def check_metric_axioms(self, tol=1e-12):
        d = self.distance_table()
        n = len(d)
        if not np.allclose(d, d.T, atol=tol) or np.any(np.abs(np.diag(d)) > tol):
            return False
        off = d + np.eye(n)
        if np.any(off <= tol):
            return False
        # d[i, k] <= d[i, j] + d[j, k]
        for j in range(n):
            if np.any(d > d[:, j:j + 1] + d[j:j + 1, :] + tol):
                return False
        return True


def make_chain(length):
    """Path graph 0..length-1 with d(x, y) = |x - y|, D = 1 and x0 = floor(length/2)."""
    if int(length) != length or length < 1:
        raise InvalidArgument("chain length must be a positive integer")
    length = int(length)
    return MetricGraph(range(length), 1, length // 2, coords=np.arange(length)[:, None],
                       rule="l1", path_metric=True)


def make_grid(side, D, site_cap=DEFAULT_SITE_CAP):
    """Hypercubic grid of side^D sites with the l1 (graph) metric.

    D = 1 gives integer sites and coincides with ``make_chain(side)``; for D = 2
    sites are (i, j) tuples.
    """
    if int(side) != side or side < 1:
        raise InvalidArgument("grid side must be a positive integer")
    if D not in (1, 2):
        raise InvalidArgument("grids are supported for D in {1, 2}")
    if side ** D > site_cap:
        raise ResourceLimitError(f"grid with {side ** D} sites exceeds the site cap {site_cap}")
    if D == 1:
        return make_chain(side)
    coords = np.array([(i, j) for i in range(side) for j in range(side)])
    sites = [tuple(int(v) for v in c) for c in coords]
    return MetricGraph(sites, 2, (side // 2, side // 2), coords=coords, rule="l1")


def load_graph(path):
    """Read a graph file (JSON).

    Two layouts are accepted::

        {"sites": [...], "distances": [[...], ...], "dimension": D, "x0": site}
        {"coordinates": [[...], ...], "metric": "l1"|"l2"|"linf", "dimension": D,
         "sites": [...] (optional), "x0": site (optional)}
    """
    with open(path) as fh:
        data = json.load(fh)
    return graph_from_dict(data)


def graph_from_dict(data):
    allowed = {"sites", "distances", "coordinates", "metric", "dimension", "x0"}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidArgument(f"unknown graph keys: {sorted(unknown)}")
    if "dimension" not in data:
        raise InvalidArgument("graph file must declare 'dimension'")

    def _site(s):
        return tuple(s) if isinstance(s, list) else s

    x0 = _site(data["x0"]) if "x0" in data else None
    if "distances" in data:
        sites = [_site(s) for s in data["sites"]]
        return MetricGraph(sites, data["dimension"], x0, table=data["distances"])
    coords = np.asarray(data["coordinates"], dtype=float)
    sites = [_site(s) for s in data.get("sites", range(len(coords)))]
    return MetricGraph(sites, data["dimension"], x0, coords=coords, rule=data.get("metric", "l2"))


@dataclass(frozen=True)
class RegularityReport:
    c_vol: float
    dimension: int
    site: object
    radius: float
    nonincreasing_beyond_diameter: bool
    growth_exponent: float
    note: str = ""

    @property
    def understated(self):
        return bool(self.note)


def regularity_constant(graph, D=None, r_max=None, centers=None):
    """Estimate C_vol = max over centers x and realized radii r <= r_max of |B_r(x)| / (1+r)^D.

    The maximum is taken over realized distances only, which loses nothing because
    balls are constant between consecutive realized distances.
    """
    D = graph.dimension if D is None else D
    centers = graph.sites if centers is None else list(centers)
    rows = np.sort(np.stack([graph.distances_from(x) for x in centers]), axis=1)
    radii = np.unique(np.concatenate([[0.0], rows.ravel()]))
    if r_max is not None:
        radii = radii[radii <= r_max]
    counts = _kernels.ball_counts(rows, radii)
    ratio = counts / (1.0 + radii)[None, :] ** D
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)

    # beyond the diameter |B_r| = |sites| is constant, so the ratio can only decrease
    far = float(rows.max()) * np.array([1.0, 2.0, 4.0, 8.0]) + 1.0
    far_counts = _kernels.ball_counts(rows, far)
    far_ratio = far_counts / (1.0 + far)[None, :] ** D
    nonincreasing = bool(np.all(np.diff(far_ratio, axis=1) <= 1e-15))

    # growth exponent of the largest balls, fitted where they still cover at most
    # half the lattice (boundary effects flatten the growth beyond that)
    best = counts.max(axis=0).astype(float)
    sel = (radii > 0) & (best <= len(graph) / 2)
    if sel.sum() > 3:
        sel &= radii >= radii[sel].max() / 2
    exponent = float("nan")
    note = ""
    if sel.sum() >= 3:
        exponent = float(np.polyfit(np.log1p(radii[sel]), np.log(best[sel]), 1)[0])
        if exponent > D + 0.25:
            note = (f"declared D={D} understates the observed ball growth "
                    f"exponent {exponent:.2f}")
    return RegularityReport(float(ratio[i, j]), int(D), centers[i], float(radii[j]),
                            nonincreasing, exponent, note)


def summability_partial_sums(graph, x0, epsilon, radius_schedule, D=None):
    """S(r) = sum over x in B_r(x0) of (1 + d(x, x0))^-(D+1+epsilon), one value per radius."""
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    D = graph.dimension if D is None else D
    d = np.sort(graph.distances_from(x0))
    weights = (1.0 + d) ** (-(D + 1.0 + epsilon))
    # ascending distances give ascending weights' partial sums; sum small terms last
    csum = np.cumsum(weights)
    idx = np.searchsorted(d, np.asarray(radius_schedule, dtype=float), side="right")
    return np.where(idx > 0, csum[np.maximum(idx - 1, 0)], 0.0)


def summability_bound(c_vol, D, epsilon, n_terms=10 ** 6):
    """Upper bound C_vol 2^D sum_{k>=1} k^-(1+eps) + C_vol from the summability proof.

    The zeta sum is truncated at ``n_terms`` and closed with the integral tail
    bound n_terms^-eps / eps, so the value is a guaranteed upper bound.
    """
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    k = np.arange(1, n_terms + 1, dtype=np.float64)
    zeta = float(np.sum(k[::-1] ** (-(1.0 + epsilon)))) + n_terms ** (-epsilon) / epsilon
    return c_vol * 2.0 ** D * zeta + c_vol


def with_center(graph, x0):
    """Same sites and metric with a different designated center x0."""
    graph.index(x0)
    if graph._table is not None and graph._coords is None:
        return MetricGraph(graph.sites, graph.dimension, x0, table=graph._table,
                           path_metric=graph.path_metric)
    return MetricGraph(graph.sites, graph.dimension, x0, coords=graph._coords, rule=graph._rule,
                       path_metric=graph.path_metric)
