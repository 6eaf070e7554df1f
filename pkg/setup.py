from pathlib import Path
from setuptools import setup, find_packages
import strainscope


setup(
    name='strainscope',
    version=strainscope.version,
    author='Ekaterina',
    long_description=open(Path(__file__).parent / 'README.md').read(),
    packages=find_packages(exclude=['tests']),
    test_suite='tests',
    install_requires=['numpy', 'scipy', 'scikit-learn', 'pandas'],
    entry_points={'console_scripts': ['strainscope=strainscope.cli:main']},
)
