# Sphinx configuration for the ocsnspd documentation.
#
# Build from the repository root with
#   sphinx-build sphinx/source sphinx/build

import os
import sys

# autodoc imports ocsnspd.* from the repository root, wherever sphinx-build is started
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

import ocsnspd


# -- Project information -----------------------------------------------------

project = 'ocsnspd'
copyright = '2026, ocsnspd developers'
author = 'ocsnspd developers'
release = ocsnspd.__version__


# -- General configuration ---------------------------------------------------

extensions = ['sphinx.ext.autodoc']
autodoc_member_order = 'bysource'
autodoc_typehints = 'none'

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
