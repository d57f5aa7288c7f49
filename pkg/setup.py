from setuptools import setup, find_packages

setup(
    name="degenfv",
    version="0.1.0",
    description="Finite-volume solver and experiment CLI for degenerate parabolic-hyperbolic problems with nonlinear flux boundary conditions",
    author="Your Name",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "click>=8.1.0",
        "pyyaml>=6.0",
        "python-dotenv>=1.0.0",
        "rich>=13.0.0",
    ],
    extras_require={
        "test": [
            "pytest>=7.0",
            "hypothesis>=6.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "degenfv=src.cli:cli",
        ],
    },
    python_requires=">=3.8",
)
