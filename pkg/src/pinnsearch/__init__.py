"""Automatic PINN hyperparameter search.

Retrieves best-known configurations for PDEs similar to the target (weighted
label encodings, cosine similarity), refines them with a UCT-guided tree
search over the hyperparameter axes, and scores every candidate by actually
training a small physics-informed network and measuring its test MSE.
"""

__version__ = "0.1.0"

from . import burgers, catalog, db, features, orchestrator, policy, space, trainer, tree_search

__all__ = [
    "burgers", "catalog", "db", "features", "orchestrator", "policy", "space",
    "trainer", "tree_search", "__version__",
]
