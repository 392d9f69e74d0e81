"""Domain types and errors for the detection simulator"""
