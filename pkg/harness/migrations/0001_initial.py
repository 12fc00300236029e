from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('synth', 'Synthetic corpus'), ('partition', 'Partition'), ('train', 'Policy training'), ('rollout', 'Test-time rollout'), ('baseline', 'Baseline'), ('robustness', 'Robustness'), ('eval', 'Evaluation')], max_length=20)),
                ('seed', models.IntegerField(blank=True, null=True)),
                ('config', models.JSONField(default=dict, help_text='Configuration the run was started with')),
                ('run_dir', models.CharField(blank=True, max_length=500)),
                ('beta', models.FloatField(blank=True, help_text='Ensemble weight fitted after the rollout', null=True)),
                ('metrics', models.JSONField(default=dict, help_text='Headline metrics (precision, recall, f1, error rate)')),
                ('wall_clock_seconds', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['kind'], name='harness_run_kind_idx'), models.Index(fields=['created_at'], name='harness_run_created_idx')],
            },
        ),
        migrations.CreateModel(
            name='StepRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('episode', models.IntegerField(default=0)),
                ('step', models.IntegerField()),
                ('action', models.IntegerField()),
                ('epsilon', models.FloatField(blank=True, null=True)),
                ('reward', models.FloatField(blank=True, null=True)),
                ('loss', models.FloatField(blank=True, null=True)),
                ('target', models.FloatField(blank=True, null=True)),
                ('acc_c1', models.FloatField(blank=True, null=True)),
                ('acc_c2', models.FloatField(blank=True, null=True)),
                ('acc_ensemble', models.FloatField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='steps', to='harness.experimentrun')),
            ],
            options={
                'ordering': ['run', 'episode', 'step'],
            },
        ),
        migrations.CreateModel(
            name='ReplicaResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('replica', models.IntegerField()),
                ('seed', models.IntegerField()),
                ('metric', models.CharField(max_length=30)),
                ('value', models.FloatField()),
                ('beta', models.FloatField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='replicas', to='harness.experimentrun')),
            ],
            options={
                'ordering': ['run', 'replica'],
            },
        ),
    ]
