from setuptools import setup

def readme():
    with open('README.md') as fin:
        return fin.read()

install_requires = [
    'numpy>=1.22',
    'scipy>=1.9',
    'matplotlib>=3.5',
]

packages = [
    'ocsnspd',
    'ocsnspd.ext',
]

package_data = {
    'ocsnspd': [
        'data/materials/*.csv',
        'data/designs/*.json',
        'data/designs/*.csv',
        'data/calibrations/*.json',
        'data/calibrations/*.csv',
    ],
}

extras_require = {
    'docs': [
        'sphinx==4.3.2',
        'sphinx-rtd-theme==1.0.0',
    ],
}

setup(
    name='ocsnspd',
    version='0.1.0',
    description='Optics, calibration and system models for fiber-coupled cavity SNSPDs.',
    long_description=readme(),
    long_description_content_type='text/markdown',

    install_requires=install_requires,
    extras_require=extras_require,
    python_requires='>=3.10',
    packages=packages,
    package_data=package_data,
    entry_points={
        'console_scripts': ['ocsnspd=ocsnspd.cli:main'],
    },

    classifiers=[
        'Development Status :: 3 - Alpha',
        'License :: OSI Approved :: MIT License',
        'Intended Audience :: Science/Research',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Physics'
    ]
)
