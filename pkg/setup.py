"""
Setup script para MongeFlux
"""

from setuptools import setup, find_packages
from pathlib import Path

# Leer el README
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text(encoding='utf-8') if (this_directory / "README.md").exists() else ""

# Leer requirements
requirements = []
requirements_file = this_directory / "requirements.txt"
if requirements_file.exists():
    with open(requirements_file, 'r', encoding='utf-8') as f:
        requirements = [
            line.split('#')[0].strip() for line in f
            if line.strip() and not line.startswith('#') and not line.startswith('pytest')
        ]

setup(
    name="mongeflux",
    version="1.0.0",
    author="MongeFlux Team",
    description="Minimización de funcionales lineales con determinante de Monge-Ampère prescrito",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    py_modules=["app"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "mongeflux=app:main",
        ],
    },
    include_package_data=True,
    package_data={
        "": ["*.toml", "*.csv", "*.md"],
    },
    keywords="monge-ampere, convex optimization, finite differences, linearized monge-ampere",
)
