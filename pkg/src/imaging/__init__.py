# Image processing package
