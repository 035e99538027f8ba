# Camera simulation package
