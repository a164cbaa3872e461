#  Copyright (c) 2026 hand-pose-gcn contributors
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  https://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License

"""Config for setup package hand-pose-gcn."""

import os

from setuptools import setup

__version__ = '0.1.0'


def read_file(fname):
    """Read the given file.

    :param fname: Filename to be read
    :return: File content
    """
    with open(os.path.join(os.path.dirname(__file__), fname)) as f:
        return f.read()


setup(
    name='hand-pose-gcn',
    version=__version__,
    description='Hybrid classification-regression graph networks for 2D/3D '
                'hand pose estimation',
    long_description=read_file('README.rst'),
    long_description_content_type='text/x-rst',
    author='hand-pose-gcn contributors',
    packages=['hand_pose_gcn'],
    python_requires='>=3.9',
    install_requires=read_file('requirements.txt').splitlines(),
    entry_points={
        'console_scripts': ['hand-pose-gcn = hand_pose_gcn.cli:main'],
    },
    license='Apache 2.0',
    keywords=['hand pose', 'graph convolution', 'pytorch', 'reportportal'],
    classifiers=[
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12'
    ]
)
