#!/usr/bin/env python

from setuptools import setup, find_packages

required = ["numpy", "scipy", "networkx", "pandas", "scikit-learn", "tqdm"]

extras_required = {
    "test": ["pytest"],
}

setup(
    name="dagprobit",
    version="0.1.0",
    description="Bayesian causal inference in Gaussian DAG-probit models",
    license="Apache License 2.0",
    packages=find_packages(),
    install_requires=required,
    extras_require=extras_required,
    entry_points={"console_scripts": ["dagprobit=dagprobit.cli:main"]},
)
