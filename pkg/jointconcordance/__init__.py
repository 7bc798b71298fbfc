"""Joint concordance evaluation of competing-risks models."""
