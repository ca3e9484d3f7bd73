"""Top-k budgeted route search over POI maps with submodular feature gains."""

from .errors import CapExceededError, InfeasibleQueryError, InputError, RouteError, UnreachableError
from .gain import AggregationSpec, GainContext, phi, relaxed_poi_cost, upper_bound_marginal
from .index import (
    FeatureIndex,
    HopIndex,
    build_feature_index,
    build_hop_index,
    dijkstra_cost,
    least_travel_cost,
    load_hop_index,
    save_hop_index,
)
from .model import Edge, Poi, PoiMap, Route, load_map, route_cost, save_map, validate_map
from .query import CandidateSet, Query, query_from_dict, retrieve_subindices
from .search import (
    Caps,
    SearchStats,
    TopK,
    brute_force,
    estimate_search_space,
    greedy,
    pacer,
    pacer_sc,
    solve,
    update_topk,
)

__version__ = "0.1.0"
