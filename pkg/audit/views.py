# audit/views.py
from pathlib import Path

from django.http import JsonResponse
from rest_framework import generics, status
from rest_framework.permissions import IsAuthenticated
from rest_framework.response import Response
from rest_framework.views import APIView

from .artifacts import read_json
from .exceptions import ConfigError
from .models import AnalysisRun
from .serializers import AnalysisRunSerializer


# ---------- Health ----------

def health(request):
    return JsonResponse({"status": "ok"})


def not_found(request, exception=None):
    return JsonResponse({"error": "Not found."}, status=404)


# ---------- Recorded runs ----------

class AnalysisRunListView(generics.ListAPIView):
    serializer_class = AnalysisRunSerializer
    permission_classes = [IsAuthenticated]

    def get_queryset(self):
        qs = AnalysisRun.objects.all()
        oem = self.request.query_params.get('oem')
        if oem:
            qs = qs.filter(oem=oem)
        return qs


class AnalysisRunDetailView(generics.RetrieveAPIView):
    serializer_class = AnalysisRunSerializer
    permission_classes = [IsAuthenticated]
    queryset = AnalysisRun.objects.all()


class AnalysisRunReportView(APIView):
    permission_classes = [IsAuthenticated]

    def get(self, request, pk):
        run = generics.get_object_or_404(AnalysisRun, pk=pk)
        report = Path(run.out_dir) / 'report.json'
        if not report.is_file():
            return Response(
                {"error": "Report file is no longer available."},
                status=status.HTTP_404_NOT_FOUND
            )
        try:
            return Response(read_json(report))
        except ConfigError:
            return Response(
                {"error": "Report file could not be read."},
                status=status.HTTP_404_NOT_FOUND
            )
