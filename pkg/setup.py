import setuptools

setuptools.setup(
    name = "clLearn",
    version = "0.1.0",
    description="Continual learning on dense numpy networks: importance-weighted consolidation, neural inhibition regularizers, distillation and task-free online learning.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=("tests",)),
    python_requires=">=3.7",
    install_requires=["numpy"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["clLearn=clLearn.__main__:main"]},
    classifiers=(
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ),
)
