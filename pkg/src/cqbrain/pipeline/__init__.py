"""End-to-end workflow: CLI commands, configs, datasets, checkpoints, reports."""
