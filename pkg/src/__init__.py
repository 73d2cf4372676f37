# DelayLab - Source Package
