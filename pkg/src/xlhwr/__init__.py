"""Cross-script handwritten word recognition and word spotting.

Character models trained on one (source) script are used to recognize and
retrieve words written in another (target) script.  Words are split into
upper/middle/lower zones, middle zones are decoded with GMM-HMMs, modifiers
are classified with an RBF SVM, and target characters are mapped onto source
characters by majority voting.
"""

__version__ = "0.1.0"
