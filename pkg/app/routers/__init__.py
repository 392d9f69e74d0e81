"""Command routers for the detection simulator"""
from app.routers import experiments
