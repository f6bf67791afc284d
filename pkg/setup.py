"""
Setup script for algostab-toolkit
"""

from setuptools import setup, find_packages

setup(
    name="algostab-toolkit",
    version="1.0.0",
    packages=find_packages(include=["algostab", "algostab.*"]),
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "matplotlib>=3.7.0",
        "pydantic>=2.5.0",
        "typer>=0.9.0",
        "rich>=13.7.0",
    ],
    entry_points={
        "console_scripts": [
            "algostab=algostab.cli.main:app",
        ],
    },
)
