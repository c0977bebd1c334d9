"""
certmenu: revenue- and welfare-optimal certification menus.
"""

__version__ = "0.1.0"

from certmenu.errors import (CertMenuError, ConsistencyError, DomainError, EquilibriumError, EvaluationError,
                             NumericError, PreconditionError, ReductionError, ResourceError, ValidationError)
from certmenu.utils import DEFAULT_TOLERANCES, Tolerances, configure_threads
from certmenu.model import (CertificationEconomy, EqualRevenue, Menu, PiecewiseCdf, PricingInstance,
                            TypeDistribution, Uniform, ValidationReport, ValuationFamily, expect, normalize_menu,
                            validate_economy, validate_single_crossing)
from certmenu.reduction import matched_consumer, reduce_to_pricing
from certmenu.zoo import InstanceSpec, make_named_instance, rich_gap_menu
from certmenu.choice import (MarketOutcome, best_response, choose_items, indifference_type, lowest_buyer,
                             segment_outcome)
from certmenu.oracle import DiscreteInstance, brute_force_optimal, discretize_types
from certmenu.fptas import (DpTables, Grids, build_grids, discretize_menu, dp_solve, linear_single_item,
                            monotone_prune, solve_discrete, sparsify)
from certmenu.welfare import first_best_welfare, wel_minus_rev, welfare_dp, welfare_optimal_dense
from certmenu.market import (GameOutcome, clearing_prices, full_game_outcome, producer_choices,
                             verify_walrasian)
