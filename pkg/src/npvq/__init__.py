"""ADPCM and predictive vector quantization with linear and MLP predictors."""

__version__ = "0.1.0"
