from setuptools import find_packages, setup

setup(
    name="regionlab",
    packages=[package for package in find_packages() if package.startswith("regionlab")],
    package_data={"regionlab": ["algos/*/configs/*.yaml"]},
    version="0.1.0",
    install_requires=open("requirements.txt", "r").read().splitlines(),
    tests_require=["pytest"],
    test_suite="tests",
    entry_points={"console_scripts": ["regionlab=regionlab.cli:main"]},
    license="MIT",
    description="Linear region analysis of ReLU networks",
    long_description=open("README.md").read(),
)
