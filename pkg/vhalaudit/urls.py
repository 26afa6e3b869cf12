# vhalaudit/urls.py
"""Run-history API under /api/; the admin lists recorded runs."""
from django.contrib import admin
from django.urls import include, path

urlpatterns = [
    path('api/', include('audit.urls')),
    path('admin/', admin.site.urls),
]

# JSON 404s, the API has no HTML pages
handler404 = 'audit.views.not_found'
