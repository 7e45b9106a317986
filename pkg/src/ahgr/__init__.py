"""Adaptive hybrid graph representation for attributed graphs."""

from .basic import BasicEmbedding, SnmfConfig, import_basic_embedding, nndsvd_init, row_normalize, snmf_embed
from .errors import AHGRError, DataError, FormatError, NumericalError, ParameterError
from .fusion import FusionConfig, FusionResult, consistency_indicator, fit
from .graph import AttributedGraph, load_attributes, load_edge_list, load_embedding, load_graph, load_labels, save_embedding
from .reweighting import SourceView, attribute_view, build_views, modularity_view, normalize, proximity_views

__version__ = "0.1.0"
