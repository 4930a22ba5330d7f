"""addtwist - additively twisted L-functions of newforms and averages of modular symbols."""

__version__ = "0.1.0"
