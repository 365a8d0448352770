"""Command-line harness: configuration, persistence, grid search and ablations."""
