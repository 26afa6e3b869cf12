# audit/models.py
from django.db import models


class AnalysisRun(models.Model):
    STATUS_CHOICES = (
        ('ok', 'OK'),
        ('usage_error', 'Usage error'),
        ('analysis_error', 'Analysis error'),
    )

    oem = models.CharField(max_length=100)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='ok')
    exit_code = models.PositiveSmallIntegerField(default=0)
    phases = models.JSONField(default=list, blank=True)
    out_dir = models.CharField(max_length=500)
    report_digest = models.CharField(max_length=64, blank=True)  # sha256 of report.json
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField()

    class Meta:
        ordering = ('-started_at', '-id')

    def __str__(self):
        return f"{self.oem} run at {self.started_at:%Y-%m-%d %H:%M} ({self.status})"
