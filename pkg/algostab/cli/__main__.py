"""
CLI entry point for running as a module.
"""

from algostab.cli.main import app

if __name__ == "__main__":
    app()
