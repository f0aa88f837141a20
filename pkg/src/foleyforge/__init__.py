"""foleyforge: a desk-scale Foley sound-effect generation workbench.

Pipeline: ingest a seed corpus, augment it with randomized classic effects,
train a multiband variational autoencoder on the result, explore and mix the
latent control space, and evaluate output quality with mel-spectrogram error
and Frechet distance over embedding statistics.
"""

from foleyforge.audio import AudioBuffer, SegmentSpec

__all__ = ["AudioBuffer", "SegmentSpec"]
__version__ = "0.1.0"
