"""Massive-antenna sensor network detection simulator"""
__version__ = "0.1.0"
