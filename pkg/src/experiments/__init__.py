"""
Experiments package for DelayLab: campaigns, statistics, reproductions
"""
