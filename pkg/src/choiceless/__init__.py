"""Choiceless Polynomial Time with witnessed symmetric choice.

An interpreter for BGS+WSC over finite structures, Gurevich-style
canonization with witnessing automorphisms, coherent configurations and
CFI tooling, each cross-checked against brute-force oracles.
"""

__version__ = "0.1.0"
