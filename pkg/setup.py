from setuptools import setup, find_packages

setup(
    name="mppi",
    version="1.0.0",
    description="Policy iteration for mean-payoff zero-sum stochastic games",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "numpy==1.24.3",
        "scipy==1.11.4",
        "pydantic==2.5.0",
        "pydantic-settings==2.1.0",
        "python-dotenv==1.0.0",
    ],
    extras_require={
        "test": [
            "pytest==7.4.3",
            "hypothesis==6.92.1",
        ],
    },
    entry_points={
        "console_scripts": [
            "mppi=mppi.cli:main",
        ],
    },
    python_requires=">=3.9,<3.12",
)
