from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='AnalysisRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('oem', models.CharField(max_length=100)),
                ('status', models.CharField(choices=[('ok', 'OK'), ('usage_error', 'Usage error'), ('analysis_error', 'Analysis error')], default='ok', max_length=20)),
                ('exit_code', models.PositiveSmallIntegerField(default=0)),
                ('phases', models.JSONField(blank=True, default=list)),
                ('out_dir', models.CharField(max_length=500)),
                ('report_digest', models.CharField(blank=True, max_length=64)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField()),
            ],
            options={
                'ordering': ('-started_at', '-id'),
            },
        ),
    ]
