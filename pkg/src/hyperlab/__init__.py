"""hyperlab: numerical laboratory for strictly hyperbolic equations whose
coefficients are singular at t = 0 and grow polynomially in x."""

__version__ = "0.1.0"
