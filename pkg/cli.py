"""Launcher for the lineage-governance command line (same as the `lineage-governance` script)."""

from lineage_governance.cli import app

if __name__ == "__main__":
    app()
