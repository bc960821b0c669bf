#!/usr/bin/env python

# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


from os import path
from setuptools import setup, find_packages
from hgformer import __version__, __license__, __author__, __contact__


def get_long_description():
    with open(path.join(path.dirname(path.abspath(__file__)), 'README.md'), encoding='utf8') as fp:
        return fp.read()


setup(
    name='hgformer',
    version=__version__,
    license=__license__,
    author=__author__,
    author_email=__contact__,
    description='Hypergraph transformer with quantized and clustered hyperedges for skeleton action recognition',
    long_description=get_long_description(),
    long_description_content_type='text/markdown',
    python_requires='>=3.8',
    setup_requires=[
        'setuptools>=40.0'
    ],
    install_requires=[
        'click>=7.0',
        'easy_enum==0.3.0',
        'numpy>=1.20',
        'scipy>=1.6',
    ],
    classifiers=[
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'License :: OSI Approved :: BSD License',
        'Operating System :: Microsoft :: Windows',
        'Operating System :: POSIX :: Linux',
        'Environment :: Console',
        'Topic :: Scientific/Engineering',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Utilities',
    ],
    packages=find_packages('.', exclude=['tests']),
    entry_points={
        'console_scripts': [
            'hgformer = hgformer.__main__:main',
        ],
    }
)
