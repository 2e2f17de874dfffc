"""Numerical machinery for microlocal regularity in Denjoy-Carleman classes.

Modules:
    weights  - regular weight sequences, associated functions h/h1/N, envelopes
    jets     - exact truncated polynomial algebra, formal solution recursion
    dynkin   - disk-kernel approximate solutions and almost-analytic extension
    fbi      - FBI transform, decay classification, wave-front scanning
    pde      - nonlinear models, linearization, characteristic sets, experiments
    fixtures - shared oracle fixtures
    cli      - batch entry point
"""

__version__ = "0.1.0"
