"""Simulation lab for contextual dynamic pricing with heterogeneous buyers.

A seller posts prices against contexts chosen by an adversary while buyer
types arrive from an unknown finite-support distribution; learners see only
binary purchase feedback (or, in the richer feedback models, the buyer's
identifier or type vector). The package provides the exact pricing
primitives, posterior-sampling and zooming learners, hard-instance
generators, and a seeded experiment harness measuring regret against the
exact benchmark.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .covers import CoverSpec, ModelClass, build_cube_cover, build_layered_class
from .harness import (EpisodeResult, RoundRecord, RunConfig, Summary,
                      aggregate, cumulative_regret, emit_csv, emit_json,
                      grid_ucb_baseline, run_and_summarize, run_episode)
from .instances import (AdversarySpec, InstanceSpec, lb_base, lb_perturbed,
                        lb_small, lb_tensor, lb_values, sample_type)
from .posterior import (DemandModel, GopsDecision, PosteriorState, gops_select,
                        gops_update, make_ops, make_pops, ops_loss, pops_loss)
from .pricing import (Context, PricingError, SmoothingParams, TypeDistribution,
                      ValueDistribution, best_response, conservative_policy,
                      demand, discretized_best_response, gap, levy_distance,
                      max_revenue, project, revenue, smoothed_demand,
                      smoothed_revenue)
from .type_feedback import (EllipsoidState, IdentifierState, PluginState,
                            cs_price, cs_update, cs_width, ident_select,
                            ident_update, plugin_select, plugin_update)
from .zooming import (ArmStats, ZoomState, activate_if_uncovered,
                      confidence_radius, index, select_price, update)

__version__ = "0.1.0"
