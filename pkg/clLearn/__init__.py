name = "clLearn"
__version__ = "0.1.0"
