"""Numerical services for the detection simulator"""
