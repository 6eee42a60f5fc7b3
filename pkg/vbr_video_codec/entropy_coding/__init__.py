from .priors import FactorizedPrior, GaussianConditional, estimate_bits, quantize, to_symbols
from .range_coder import RangeDecoder, RangeEncoder, range_decode, range_encode
from .symbol_models import SymbolModel

__all__ = [
    "FactorizedPrior",
    "GaussianConditional",
    "RangeDecoder",
    "RangeEncoder",
    "SymbolModel",
    "estimate_bits",
    "quantize",
    "range_decode",
    "range_encode",
    "to_symbols",
]
