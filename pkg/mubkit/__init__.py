"""
mubkit - mutually unbiased measurements over finite fields

Components:
- gf: arithmetic in F_{p^r}, additive character and bicharacter
- cmat: dense complex matrices and Hilbert-Schmidt geometry
- weyl: Weyl operators U_a, V_b and the labelled family W(a, x)
- mub: projector families, MUB suites and SMUB/WMUB decisions
- recon: exact reconstruction, prime-power and composite
- tomo: finite-shot simulation, estimation and positivity repair
"""

__version__ = "0.1.0"
