"""Graph node-aware quantization-aware training for LightGCN-style recommenders."""
from .config import TrainConfig
from .data import Dataset, parse_interactions, split_train_test
from .errors import FormatError, GnaqError, InputError, NumericError, ParseError, SamplingError
from .graph import InteractionGraph, PropagationState, backpropagate, build_graph, neighbor_mean, propagate
from .metrics import EvalReport, evaluate
from .quant import QuantizedModel, dequantize, extend_embedding, init_quantizer

__version__ = "0.1.0"
