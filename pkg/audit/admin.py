# audit/admin.py
from django.contrib import admin
from .models import AnalysisRun


@admin.register(AnalysisRun)
class AnalysisRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'oem', 'status', 'exit_code', 'started_at', 'finished_at')
    list_filter = ('status', 'oem')
    search_fields = ('oem', 'out_dir', 'report_digest')
    readonly_fields = ('report_digest', 'phases')
