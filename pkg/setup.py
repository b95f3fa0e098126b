import sys

import setuptools


# This code is not (yet) intended for release!
command_blacklist = ["register", "upload"]
for command in command_blacklist:
    if command in sys.argv:
        print("Command {} has been blacklisted (private repo), exiting...".format(command), file=sys.stderr)
        sys.exit(2)


with open("requirements.txt") as f:
    required_modules = list(map(str.strip, f.readlines()))

with open("requirements-test.txt") as f:
    test_modules = list(map(str.strip, f.readlines()))


setuptools.setup(
    name="regbox",
    version="0.0.1",
    author="Dylan Gardner",
    author_email="dylan.gardner@utah.edu",
    description="High-accuracy solvers for regularized box-simplex games, with decremental bipartite "
                "matching and entropic optimal transport built on top.",
    packages=setuptools.find_packages(exclude=["tests"]),
    package_data={"regbox": ["py.typed"]},
    install_requires=required_modules,
    extras_require={"test": test_modules},
    entry_points={"console_scripts": ["regbox=regbox.cli:run"]},
    zip_safe=False,
)
