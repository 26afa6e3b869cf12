# audit/urls.py
from django.urls import path

from .views import (
    health,
    AnalysisRunListView,
    AnalysisRunDetailView,
    AnalysisRunReportView,
)

urlpatterns = [
    path("health/", health, name="health"),

    # recorded runs
    path('runs/', AnalysisRunListView.as_view(), name='run-list'),
    path('runs/<int:pk>/', AnalysisRunDetailView.as_view(), name='run-detail'),
    path('runs/<int:pk>/report/', AnalysisRunReportView.as_view(), name='run-report'),
]
