import csv

from django.contrib import admin
from django.http import HttpResponse
from django.urls import reverse
from django.utils.html import format_html

from .models import ExperimentRun, ReplicaResult, StepRecord
from .reports import TRAINING_LOG_HEADER

KIND_COLOURS = {
    'train': 'purple',
    'rollout': 'green',
    'baseline': 'orange',
    'robustness': 'blue',
}


class StepRecordInline(admin.TabularInline):
    model = StepRecord
    extra = 0
    can_delete = False
    fields = ['episode', 'step', 'action', 'epsilon', 'reward', 'loss', 'target', 'acc_c1', 'acc_c2', 'acc_ensemble']
    readonly_fields = fields
    show_change_link = False


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'kind_badge', 'seed', 'beta', 'headline_f1', 'wall_clock_seconds', 'created_at']
    list_filter = ['kind', 'created_at']
    search_fields = ['run_dir']
    readonly_fields = ['created_at']
    inlines = [StepRecordInline]
    actions = ['export_step_records']

    def kind_badge(self, obj):
        """Display the run kind with colour coding."""
        return format_html(
            '<span style="color: {}; font-weight: bold;">{}</span>',
            KIND_COLOURS.get(obj.kind, 'gray'),
            obj.get_kind_display(),
        )

    kind_badge.short_description = 'Kind'

    def headline_f1(self, obj):
        value = (obj.metrics or {}).get('f1')
        if not isinstance(value, (int, float)):
            return '-'
        return f"{value:.4f}"

    headline_f1.short_description = 'F1'

    def export_step_records(self, request, queryset):
        """Download the step rows of the selected runs as CSV."""
        response = HttpResponse(content_type='text/csv')
        response['Content-Disposition'] = 'attachment; filename="step_records.csv"'

        writer = csv.writer(response)
        writer.writerow(['run', 'kind'] + TRAINING_LOG_HEADER + ['acc_c1', 'acc_c2', 'acc_ensemble'])
        records = StepRecord.objects.filter(run__in=queryset).select_related('run')
        for record in records:
            writer.writerow([
                record.run_id, record.run.kind, record.episode, record.step, record.epsilon, record.action,
                record.reward, record.loss, record.target, record.acc_c1, record.acc_c2, record.acc_ensemble,
            ])
        return response

    export_step_records.short_description = "Export step records as CSV"


@admin.register(ReplicaResult)
class ReplicaResultAdmin(admin.ModelAdmin):
    list_display = ['id', 'run_link', 'replica', 'seed', 'metric', 'value', 'beta']
    list_filter = ['metric']

    def run_link(self, obj):
        """Create a link to the owning run."""
        url = reverse('admin:harness_experimentrun_change', args=[obj.run.id])
        return format_html('<a href="{}">{}</a>', url, f"Run #{obj.run.id}")

    run_link.short_description = 'Run'


@admin.register(StepRecord)
class StepRecordAdmin(admin.ModelAdmin):
    list_display = ['id', 'run', 'episode', 'step', 'action', 'reward', 'loss']
    list_filter = ['run__kind']
