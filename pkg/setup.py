# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.


import setuptools

setuptools.setup(
    name="deform-gnn",
    version="0.1.1",
    author="the deform-gnn authors",
    packages=setuptools.find_packages(exclude=["tests", "examples"]),
    license="LICENSE",
    description="Deformable graph convolutional networks for node classification",
    long_description=open("README.md").read(),
    install_requires=[
        "numpy",
        "scipy",
        "tqdm",
        "h5py",
        "tabulate",
    ],
    entry_points={
        "console_scripts": ["deform-gnn = deform_gnn.cli:main"],
    },
)
