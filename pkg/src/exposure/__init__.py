# Exposure control package
