from .expected_time import ExpectedTimeQuery, ZenoError, expected_time
from .lra import LraQuery, build_quotient, lra, lra_unichain, solve_unichain
from .timed import (
    Digitisation,
    ReachQuery,
    ResourceError,
    TimedQuery,
    build_dma,
    choose_delta,
    digitisation_bound,
    timed_reachability,
    unbounded_reachability,
)
