from setuptools import setup

setup(
    name='linfcert',
    version='1.0',
    description='Certifiably robust l_inf-distance networks and ensembles',
    py_modules=['main'],
    packages=['cli', 'dataio', 'ensemble', 'layers', 'numcore', 'robustness', 'training', 'utils'],
    python_requires='>=3.9',
    install_requires=[
        'numpy>=1.24.0',
        'scipy>=1.10.0',
    ],
    extras_require={
        'test': ['pytest>=7.0.0'],
    },
    entry_points={
        'console_scripts': ['linfcert=main:main'],
    },
)
