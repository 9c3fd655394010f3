"""
Diagnósticos sobre soluciones y la construcción singular en n ≥ 3.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from .diagnostics import (
    Chord,
    make_chord,
    chord_identity,
    chord_functional,
    quadratic_separation,
    section_check,
    height_lemma_check,
    crease_identity_check,
)
from .pogorelov import (
    PogorelovProfile,
    PogorelovFields,
    solve_profile_ode,
    build_fields,
    verify_system,
    truncate_domain,
    stability_identity_check,
)

__all__ = [
    "Chord",
    "make_chord",
    "chord_identity",
    "chord_functional",
    "quadratic_separation",
    "section_check",
    "height_lemma_check",
    "crease_identity_check",
    "PogorelovProfile",
    "PogorelovFields",
    "solve_profile_ode",
    "build_fields",
    "verify_system",
    "truncate_domain",
    "stability_identity_check",
]
