"""Back-translation grounded text style transfer, desk scale.

The pipeline: translate a sentence into a pivot language, encode the
translation back toward the source language to obtain a style-weakened latent
code, then decode that code with a per-style generator whose training was
guided by a fixed convolutional style classifier. Includes the numerical
kernel, corpus tooling, a log-odds style lexicon, the translation and
generation models, an evaluation harness, an annotation server, and a CLI.
"""

__version__ = "0.1.0"
