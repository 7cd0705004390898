"""
spiketex - simulated neuromorphic tactile texture classification

Event streams from a simulated event-camera fingertip, a spiking
convolutional classifier trained with surrogate gradients, and the
accuracy, generalisation and power analyses run on top of them.
"""

__version__ = "1.0.0"
