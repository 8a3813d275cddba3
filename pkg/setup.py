"""
Setup script for the SRBM product-form toolkit
"""

from pathlib import Path

from setuptools import setup

HERE = Path(__file__).resolve().parent


def read_requirements():
    """Runtime requirements; hypothesis is only needed by the tests"""
    lines = (HERE / "requirements.txt").read_text().splitlines()
    reqs = [line.strip() for line in lines if line.strip() and not line.startswith("#")]
    return [r for r in reqs if not r.startswith("hypothesis")]


setup(
    name="srbm-product-form",
    version="0.1.0",
    description="Product-form diagnosis, pair projections, tandem closed forms and "
                "simulation of semimartingale reflecting Brownian motions",
    python_requires=">=3.8",
    py_modules=[
        "cli",
        "config_manager",
        "document_io",
        "exceptions",
        "figures",
        "geometry",
        "matrix_kernel",
        "performance_monitor",
        "product_form",
        "projection",
        "sample_instances",
        "simulator",
        "srbm_model",
        "tandem",
    ],
    data_files=[("config", ["config/settings.json", "config/profiles.json"])],
    install_requires=read_requirements(),
    extras_require={"test": ["hypothesis>=6.80.0"]},
    entry_points={"console_scripts": ["srbm-pf=cli:main"]},
)
