__version__ = "0.1.0"  # Matches pyproject.toml version
