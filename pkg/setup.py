# Derenderer Library
#
# Copyright 2026 The Derenderer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""A setuptools based setup module.

See:
https://packaging.python.org/guides/distributing-packages-using-setuptools/
"""

from setuptools import setup, find_packages
from os import path, environ
from io import open

if environ.get('CI_COMMIT_TAG'):
    version = environ['CI_COMMIT_TAG'].replace('v', '')
elif environ.get('GITHUB_REF', '').startswith('refs/tags/v'):
    version = environ['GITHUB_REF'].replace('refs/tags/v', '')
else:
    # Untagged builds
    version = '0.1.0.dev0'

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='derenderer',

    version = version,

    description='Image de-rendering: recover structured scene specifications from raster images',

    long_description = long_description,

    long_description_content_type='text/markdown',

    author='The Derenderer Authors',

    classifiers=[
        'Development Status :: 3 - Alpha',

        'Intended Audience :: Science/Research',

        'License :: OSI Approved :: Apache Software License',

        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Scientific/Engineering :: Image Recognition',

        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],

    keywords='de-rendering inverse-graphics image-to-sequence transformer lstm self-critical',

    packages = find_packages(exclude=['contrib', 'docs', 'tests', 'test']),

    python_requires='>=3.8, <4',

    install_requires=[
        'numpy>=1.21,<3',
        'scipy>=1.7,<2',
        'xxhash>=1.3.0,<4',
        'tqdm>=4.50,<5',
    ],

    extras_require={
        'test': ['coverage', 'pytest'],
    },

    entry_points={
        'console_scripts': [
            'derender = derenderer.cli:main',
        ],
    },
)
