# Fiducial marker package
