# aaec-bench source package
