"""
URL configuration for cotraining_lab project.

Only the admin is served: it is the browsing surface for recorded experiment runs.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
