#!/usr/bin/env python
"""
Entry script for the mixgeo command line.
Supports different environments through environment files:
- .env, .env.development, .env.testing, .env.production

Usage:
  MIXGEO_ENV=development python app.py analyze --loss brier
  MIXGEO_ENV=production python app.py profile --loss log --quantity curvature --out curvature.csv
"""
from mixgeo.config.env_manager import load_environment
from mixgeo.utils.logger import configure_logging
from mixgeo import create_cli

# Load environment variables based on MIXGEO_ENV
env_vars = load_environment()

if __name__ == "__main__":
    configure_logging("mixgeo")
    cli = create_cli()
    cli(prog_name="mixgeo")
