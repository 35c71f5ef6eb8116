"""Post-model pipelines for weakly-supervised surgical tool localization."""
