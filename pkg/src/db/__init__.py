"""
Results archive for DelayLab campaigns
"""
