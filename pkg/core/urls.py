"""
URL configuration for core project.

The toolkit is driven from management commands; no routes are served.
"""

urlpatterns = []
