"""Random field parse ranking trained on an informative sample."""
