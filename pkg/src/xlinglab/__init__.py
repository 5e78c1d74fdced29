"""Desk-scale laboratory for dual-objective language-model pretraining.

Subpackages in dependency order: tensor (autodiff substrate), corpus
(synthetic parallel languages), tokenizer, model (decoder-only transformer),
objectives (example builders and losses), trainer, evaluate (perplexity /
alignment / translation metrics), cli.
"""

__version__ = "0.1.0"
