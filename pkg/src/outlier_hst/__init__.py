"""Outlier embeddings of finite metrics into hierarchically separated trees."""
from . import errors
from .apps import (CostTable, McctInstance, Request, RequestSet, app_outer_loop, mcct_outlier,
                   per_request_opt)
from .evaluate import (DistortionReport, brute_force_best_outliers, estimate_distortion,
                       planted_instance)
from .frt import EmbeddingSampler, FixedSampler, FrtSampler, ListSampler, frt_sample
from .hst import (Hst, HstEmbedding, is_ultrametric, scale_up, ultrametric_to_hst,
                  validate_hst)
from .lp_model import LpModel, build_lp, witness_from_distribution
from .lp_solver import LpSolution, solve
from .merge import merge_hst
from .metric import (MetricSpace, Subset, compose, from_graph, gen_expander_clique,
                     validate)
from .nested import Assortment, NestedSampler, NestedTrace, nested_compose
from .rounding import OutlierResult, outlier_embed, partitions_to_hst, round_partitions

__version__ = "0.1.0"
